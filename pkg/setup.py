from setuptools import setup, find_packages

setup(
    name='boltzdg',
    version='0.1.0',
    description='Discontinuous Galerkin discrete-ordinates solver for the linear Boltzmann transport equation',
    packages=find_packages(include=['src', 'src.*', 'config']),
    install_requires=[
        'numpy>=1.24',
        'scipy>=1.10',
        'pandas>=2.0.0',
        'pyarrow>=12.0.0',
        'matplotlib>=3.7',
        "tomli>=1.1; python_version < '3.11'",
    ],
    entry_points={
        'console_scripts': [
            'boltzdg=src.cli.main:main',
        ],
    },
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.10',
)
